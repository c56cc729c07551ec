//! `mmmc`: experiment runner for the multi-modes Monte Carlo finite element solver.
//!
//! Exit codes: 0 success, 1 output I/O failure, 2 configuration error,
//! 3 numerical or solver error.

mod config;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmmc::analysis::NormMatrices;
use mmmc::experiments::{
    compare, converge, kl_experiment, table1, CompareOptions, ConvergeOptions, ExpectationMode,
    KlOptions, Table1Options,
};
use mmmc::random_fields::{CovarianceKernel, RandomFieldSpec};
use mmmc::solver::{run, MeshSpec, ProblemInputs, RunResult, SolverConfig};
use mmmc::{Domain, OpCounters};

use config::{ExperimentConfig, Law};
use output::{num, OutputDir, Provenance};

#[derive(Parser)]
#[command(name = "mmmc", version, about = "Multi-modes Monte Carlo finite element experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Random seed; overrides the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the sample loop (default 1).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver configuration.
    Run { config: PathBuf },
    /// Relative L2 errors of the 1D benchmark over an (ε, N) grid.
    Table1 {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0.01)]
        h: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.4, 0.6, 0.8])]
        epsilons: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 4, 5, 6])]
        modes: Vec<usize>,
    },
    /// Mesh convergence of the 1D benchmark.
    Converge {
        #[arg(long, default_value_t = 1)]
        dimension: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.1, 0.05, 0.025])]
        h: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        modes: usize,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long, value_enum, default_value_t = Expectation::Quadrature)]
        mode: Expectation,
        /// Monte Carlo samples in `mc` mode.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Quadrature points in `quadrature` mode.
        #[arg(long, default_value_t = 64)]
        points: usize,
    },
    /// Shared-sample comparison against brute-force Monte Carlo, with timings.
    Compare { config: PathBuf },
    /// Karhunen–Loève spectrum and the derived weak-perturbation form.
    Kl(KlArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Expectation {
    Quadrature,
    Mc,
}

#[derive(Args)]
struct KlArgs {
    /// Exponent `m` of the kernel `exp(−|x−y|^m / ℓ)`.
    #[arg(long, default_value_t = 1)]
    power: u32,
    #[arg(long, default_value_t = 0.5)]
    length: f64,
    /// `lo,hi` or `x_lo,x_hi,y_lo,y_hi`.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0])]
    domain: Vec<f64>,
    #[arg(long, default_value_t = 400)]
    nodes: usize,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    /// Plain Nyström rule without the diagonal kink correction.
    #[arg(long)]
    plain: bool,
    #[arg(long, default_value_t = 1.0)]
    mean: f64,
    #[arg(long, value_enum, default_value_t = KlLaw::Normal)]
    law: KlLaw,
    /// Also run the multi-modes solver on the weak form with source `f = 1`.
    #[arg(long)]
    solve: bool,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 4)]
    modes: usize,
    #[arg(long, default_value_t = 100)]
    cells: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum KlLaw {
    Normal,
    Uniform,
}

enum Failure {
    Config(String),
    Solver(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(m) => format!("configuration error: {m}"),
            Failure::Solver(m) => format!("solver error: {m}"),
            Failure::Io(m) => format!("output error: {m}"),
        }
    }
}

impl From<mmmc::Error> for Failure {
    fn from(e: mmmc::Error) -> Self {
        use mmmc::Error as E;
        match e {
            E::InvalidConfig(_) | E::UnsupportedSpec(_) | E::InvalidMesh(_) | E::Kernel(_) => {
                Failure::Config(e.to_string())
            }
            e => Failure::Solver(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => cmd_run(&cli.global, config),
        Command::Table1 {
            samples,
            h,
            epsilons,
            modes,
        } => cmd_table1(&cli.global, *samples, *h, epsilons, modes),
        Command::Converge {
            dimension,
            h,
            modes,
            epsilon,
            mode,
            samples,
            points,
        } => {
            let mode = match mode {
                Expectation::Quadrature => ExpectationMode::Quadrature { points: *points },
                Expectation::Mc => ExpectationMode::MonteCarlo { n_samples: *samples },
            };
            cmd_converge(&cli.global, *dimension, h, *modes, *epsilon, mode)
        }
        Command::Compare { config } => cmd_compare(&cli.global, config),
        Command::Kl(args) => cmd_kl(&cli.global, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn load_config(path: &PathBuf) -> Result<(ExperimentConfig, Vec<u8>), Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Failure::Config(format!("{}: not UTF-8", path.display())))?;
    let cfg = ExperimentConfig::parse(&text).map_err(Failure::Config)?;
    Ok((cfg, bytes))
}

fn out_dir(global: &Global, cfg: Option<&ExperimentConfig>) -> PathBuf {
    global
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.dir.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn warn_epsilon(config: &SolverConfig) {
    if config.epsilon_outside_proven_regime() {
        eprintln!(
            "warning: epsilon outside proven regime (epsilon = {} >= 1)",
            config.epsilon
        );
    }
}

fn counter_row(c: &OpCounters) -> Vec<String> {
    vec![
        c.factorizations.to_string(),
        c.triangular_solve_pairs.to_string(),
        c.matvecs.to_string(),
        c.assemblies.to_string(),
    ]
}

const COUNTER_HEADER: [&str; 4] = ["factorizations", "solve_pairs", "matvecs", "assemblies"];

fn write_run_artifacts(out: &OutputDir, r: &RunResult) -> Outcome {
    let mesh = &r.mesh;
    let two_d = mesh.dim() == 2;
    let psi_rows = (0..mesh.n_dofs()).map(|i| {
        let v = mesh.dof_vertex(i);
        let x = mesh.vertices()[v];
        let mut row = vec![v.to_string(), num(x[0])];
        if two_d {
            row.push(num(x[1]));
        }
        row.push(num(r.psi[i]));
        row
    });
    let header: &[&str] = if two_d {
        &["node_id", "x", "y", "psi"]
    } else {
        &["node_id", "x", "psi"]
    };
    out.write("psi.csv", header, psi_rows)?;
    let modes = r
        .weighted_mode_h1()
        .into_iter()
        .enumerate()
        .map(|(n, v)| vec![n.to_string(), num(v)]);
    out.write("modes.csv", &["n", "weighted_h1_norm"], modes)?;
    out.write("counters.csv", &COUNTER_HEADER, [counter_row(&r.counters)])?;
    let t = &r.timings;
    out.write(
        "timings.csv",
        &["factorization_s", "assembly_s", "solves_s", "total_s"],
        [[t.factorization, t.assembly, t.solves, t.total].map(|d| num(d.as_secs_f64()))],
    )?;
    Ok(())
}

fn report_run(r: &RunResult) {
    if r.divergent_samples > 0 {
        eprintln!(
            "warning: {} of {} samples have a last weighted mode larger than the leading mode; \
             the expansion may be diverging",
            r.divergent_samples, r.n_samples
        );
    }
    let norms = NormMatrices::new(&r.mesh);
    print!(
        "{:?}: epsilon = {}, N = {}, M = {}, |psi|_L2 = {:.6e}",
        r.variant,
        r.epsilon,
        r.n_modes,
        r.n_samples,
        norms.l2(&r.psi)
    );
    if let Some(se) = r.mc_standard_error_l2 {
        print!(", MC standard error = {se:.3e}");
    }
    println!(", total {:.3}s", r.timings.total.as_secs_f64());
}

fn cmd_run(global: &Global, path: &PathBuf) -> Outcome {
    let (cfg, bytes) = load_config(path)?;
    let solver = cfg.solver_config(global.seed, global.workers).map_err(Failure::Config)?;
    let inputs = cfg.inputs().map_err(Failure::Config)?;
    warn_epsilon(&solver);
    let r = run(&solver, &inputs)?;
    let out = OutputDir::create(&out_dir(global, Some(&cfg)), Provenance::new(&bytes, solver.seed).with_experiment(cfg.experiment.clone()))?;
    write_run_artifacts(&out, &r)?;
    report_run(&r);
    Ok(())
}

fn cmd_table1(global: &Global, samples: usize, h: f64, epsilons: &[f64], modes: &[usize]) -> Outcome {
    let cells = mmmc::experiments::cells_for(1.0, h)?;
    let opts = Table1Options {
        cells,
        n_samples: samples,
        seed: global.seed.unwrap_or(0),
        workers: global.workers.unwrap_or(1),
        epsilons: epsilons.to_vec(),
        modes: modes.to_vec(),
    };
    let key = format!("table1 samples={samples} h={h} epsilons={epsilons:?} modes={modes:?}");
    let t = table1(&opts)?;
    let out = OutputDir::create(&out_dir(global, None), Provenance::new(key.as_bytes(), opts.seed))?;
    let labels: Vec<String> = modes.iter().map(|n| format!("N={n}")).collect();
    let mut header = vec!["epsilon"];
    header.extend(labels.iter().map(String::as_str));
    let grid = |pick: fn(&mmmc::experiments::Table1Cell) -> f64| {
        epsilons
            .iter()
            .map(|&e| {
                let mut row = vec![e.to_string()];
                row.extend(modes.iter().map(|&n| num(pick(t.cell(e, n).expect("cell computed")))));
                row
            })
            .collect::<Vec<_>>()
    };
    out.write("table1.csv", &header, grid(|c| c.rel_l2_error))?;
    out.write("table1_standard_error.csv", &header, grid(|c| c.rel_standard_error))?;
    out.write("counters.csv", &COUNTER_HEADER, [counter_row(&t.counters)])?;
    for e in epsilons {
        let vals: Vec<String> = modes
            .iter()
            .map(|&n| format!("{:.3e}", t.cell(*e, n).expect("cell computed").rel_l2_error))
            .collect();
        println!("epsilon = {e}: {}", vals.join("  "));
    }
    Ok(())
}

fn cmd_converge(
    global: &Global,
    dimension: usize,
    hs: &[f64],
    modes: usize,
    epsilon: f64,
    mode: ExpectationMode,
) -> Outcome {
    if dimension != 1 {
        return Err(Failure::Config(
            "converge needs a closed-form reference and supports dimension 1 only".into(),
        ));
    }
    let opts = ConvergeOptions {
        hs: hs.to_vec(),
        epsilon,
        n_modes: modes,
        mode,
        seed: global.seed.unwrap_or(0),
        workers: global.workers.unwrap_or(1),
    };
    let key = format!("converge dimension={dimension} h={hs:?} modes={modes} epsilon={epsilon} mode={mode:?}");
    let r = converge(&opts)?;
    let out = OutputDir::create(&out_dir(global, None), Provenance::new(key.as_bytes(), opts.seed))?;
    let order = |o: Option<f64>| o.map(num).unwrap_or_default();
    let rows = r.h1.rows.iter().zip(&r.l2.rows).map(|(a, b)| {
        vec![a.parameter.to_string(), num(a.error), order(a.order), num(b.error), order(b.order)]
    });
    out.write("converge.csv", &["h", "err_h1", "order_h1", "err_l2", "order_l2"], rows)?;
    for (a, b) in r.h1.rows.iter().zip(&r.l2.rows) {
        println!(
            "h = {}: H1 {:.3e} ({}), L2 {:.3e} ({})",
            a.parameter,
            a.error,
            a.order.map(|o| format!("{o:.2}")).unwrap_or_else(|| "-".into()),
            b.error,
            b.order.map(|o| format!("{o:.2}")).unwrap_or_else(|| "-".into())
        );
    }
    Ok(())
}

fn cmd_compare(global: &Global, path: &PathBuf) -> Outcome {
    let (cfg, bytes) = load_config(path)?;
    let solver = cfg.solver_config(global.seed, global.workers).map_err(Failure::Config)?;
    let inputs = cfg.inputs().map_err(Failure::Config)?;
    let section = cfg
        .compare
        .clone()
        .ok_or_else(|| Failure::Config("compare needs a [compare] section".into()))?;
    let opts = CompareOptions {
        mesh: solver.mesh,
        inputs,
        n_samples: solver.n_samples,
        epsilons: section.epsilons.clone(),
        n_max: section.max_modes,
        timing_modes: section.timing_modes.unwrap_or(3),
        seed: solver.seed,
        workers: solver.workers,
        warmup_samples: section.warmup_samples.unwrap_or(10),
    };
    for &e in &opts.epsilons {
        if e >= 1.0 {
            eprintln!("warning: epsilon outside proven regime (epsilon = {e} >= 1)");
        }
    }
    let r = compare(&opts)?;
    let out = OutputDir::create(&out_dir(global, Some(&cfg)), Provenance::new(&bytes, solver.seed).with_experiment(cfg.experiment.clone()))?;
    let rows = r
        .rows
        .iter()
        .map(|row| vec![row.epsilon.to_string(), row.n_modes.to_string(), num(row.rel_l2_distance)]);
    out.write("compare.csv", &["epsilon", "N", "rel_l2_distance"], rows)?;
    let timing_rows = r.timings.iter().map(|t| {
        vec![
            t.epsilon.to_string(),
            opts.timing_modes.to_string(),
            num(t.bruteforce.as_secs_f64()),
            num(t.multimode.as_secs_f64()),
            num(t.ratio()),
        ]
    });
    out.write(
        "compare_timings.csv",
        &["epsilon", "N", "bruteforce_s", "multimode_s", "ratio"],
        timing_rows,
    )?;
    let counter_rows = r.timings.iter().flat_map(|t| {
        [("brute-force", &t.bruteforce_counters), ("multi-modes", &t.multimode_counters)].map(|(v, c)| {
            let mut row = vec![t.epsilon.to_string(), v.to_string()];
            row.extend(counter_row(c));
            row
        })
    });
    let mut header = vec!["epsilon", "variant"];
    header.extend(COUNTER_HEADER);
    out.write("counters.csv", &header, counter_rows)?;
    for row in &r.rows {
        println!("epsilon = {}, N = {}: {:.4e}", row.epsilon, row.n_modes, row.rel_l2_distance);
    }
    for t in &r.timings {
        println!(
            "epsilon = {}: brute force {:.3}s, multi-modes (N = {}) {:.3}s, ratio {:.2}",
            t.epsilon,
            t.bruteforce.as_secs_f64(),
            opts.timing_modes,
            t.multimode.as_secs_f64(),
            t.ratio()
        );
    }
    Ok(())
}

fn cmd_kl(global: &Global, a: &KlArgs) -> Outcome {
    let domain = match a.domain.as_slice() {
        [lo, hi] => Domain::interval(*lo, *hi),
        [x0, x1, y0, y1] => Domain::rect(*x0, *x1, *y0, *y1),
        d => return Err(Failure::Config(format!("--domain needs 2 or 4 numbers, got {}", d.len()))),
    }?;
    let kernel = CovarianceKernel::exp_abs(a.power, a.length)?;
    let law = match a.law {
        KlLaw::Normal => Law::Normal,
        KlLaw::Uniform => Law::Uniform,
    };
    let opts = KlOptions {
        kernel,
        domain,
        nodes_per_dir: a.nodes,
        k_max: a.k_max,
        correction: !a.plain,
        mean: a.mean,
        law: law.into(),
    };
    let s = kl_experiment(&opts)?;
    let seed = global.seed.unwrap_or(0);
    let key = format!(
        "kl power={} length={} domain={:?} nodes={} k_max={} plain={} mean={} law={:?} solve={} samples={} modes={} cells={}",
        a.power, a.length, a.domain, a.nodes, a.k_max, a.plain, a.mean, law, a.solve, a.samples, a.modes, a.cells
    );
    let out = OutputDir::create(&out_dir(global, None), Provenance::new(key.as_bytes(), seed))?;
    let rows = s
        .basis
        .eigenvalues()
        .iter()
        .take(a.k_max)
        .enumerate()
        .map(|(k, l)| vec![(k + 1).to_string(), num(*l)]);
    out.write("kl.csv", &["k", "lambda_k"], rows)?;
    out.write(
        "kl_summary.csv",
        &["a0", "epsilon", "k_max", "trace", "corrected"],
        [vec![
            num(a.mean),
            num(s.weak_form.epsilon),
            a.k_max.to_string(),
            num(s.basis.trace()),
            s.basis.is_corrected().to_string(),
        ]],
    )?;
    println!(
        "a(x, w) = {} + {:.6} * zeta(x, w), zeta = sum_{{k=1..{}}} sqrt(lambda_k / lambda_1) phi_k(x) xi_k(w)",
        a.mean, s.weak_form.epsilon, a.k_max
    );
    println!("lambda_1 = {:.6e}, trace = {:.6e}", s.basis.eigenvalues()[0], s.basis.trace());
    if a.solve {
        let mesh = MeshSpec {
            domain,
            cells: a.cells,
        };
        let mut config = SolverConfig::new(mesh, s.weak_form.epsilon, a.modes, a.samples, seed);
        config.workers = global.workers.unwrap_or(1);
        warn_epsilon(&config);
        let inputs = ProblemInputs {
            a0: s.weak_form.a0.clone(),
            eta: s.weak_form.eta.clone(),
            f: RandomFieldSpec::constant(1.0),
        };
        let r = run(&config, &inputs)?;
        write_run_artifacts(&out, &r)?;
        report_run(&r);
    }
    Ok(())
}
