//! Discrete norms, closed-form oracles, convergence orders and Monte Carlo
//! statistics.

use crate::assembly::{assemble_mass, assemble_stiffness};
use crate::error::{Error, Result};
use crate::field::{Constant, FieldVector, GradientField, ScalarField};
use crate::mesh::Mesh;
use crate::quadrature::QuadratureRule;
use crate::random_fields::{RandomFieldSpec, SampleDraw};
use crate::solver::{MultiModeSolver, ProblemInputs, SolverConfig, Timings};
use crate::sparse::CsrMatrix;
use crate::sparse_direct::OpCounters;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    H1,
    RelativeL2,
    RelativeH1,
}

impl NormKind {
    pub fn is_relative(self) -> bool {
        matches!(self, NormKind::RelativeL2 | NormKind::RelativeH1)
    }

    fn absolute(self) -> NormKind {
        match self {
            NormKind::RelativeL2 => NormKind::L2,
            NormKind::RelativeH1 => NormKind::H1,
            k => k,
        }
    }
}

/// Mass and unit-coefficient stiffness matrices of a mesh; their quadratic
/// forms give exact L2 and H1 norms of P1 functions.
#[derive(Debug, Clone)]
pub struct NormMatrices {
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    lumped: Vec<f64>,
}

impl NormMatrices {
    pub fn new(mesh: &Mesh) -> Self {
        let mass = assemble_mass(mesh);
        let stiffness = assemble_stiffness(
            mesh,
            &Constant(1.0),
            &QuadratureRule::assembly_default(mesh.dim()),
        )
        .expect("unit coefficient is positive");
        let lumped = (0..mass.dim())
            .map(|i| mass.values()[mass.pattern().row_range(i)].iter().sum())
            .collect();
        Self {
            mass,
            stiffness,
            lumped,
        }
    }

    pub fn dim(&self) -> usize {
        self.mass.dim()
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// `∫ φ_i` for each interior basis function.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    fn quad(m: &CsrMatrix, v: &[f64]) -> f64 {
        m.quadratic_form(v).expect("length checked by caller").max(0.0)
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// Panics on a length mismatch; see [`Self::norm`] for the checked form.
    pub fn l2(&self, v: &[f64]) -> f64 {
        Self::quad(&self.mass, v).sqrt()
    }

    pub fn h1_seminorm(&self, v: &[f64]) -> f64 {
        Self::quad(&self.stiffness, v).sqrt()
    }

    pub fn h1(&self, v: &[f64]) -> f64 {
        (Self::quad(&self.mass, v) + Self::quad(&self.stiffness, v)).sqrt()
    }

    /// Absolute norm; relative kinds need a reference, see [`Self::distance`].
    pub fn norm(&self, v: &[f64], kind: NormKind) -> Result<f64> {
        self.check(v)?;
        match kind {
            NormKind::L2 => Ok(self.l2(v)),
            NormKind::H1 => Ok(self.h1(v)),
            _ => Err(Error::InvalidData(
                "a relative norm needs a reference vector".into(),
            )),
        }
    }

    /// `‖v − reference‖`, divided by `‖reference‖` for relative kinds.
    pub fn distance(&self, v: &[f64], reference: &[f64], kind: NormKind) -> Result<f64> {
        self.check(v)?;
        self.check(reference)?;
        let diff: Vec<f64> = v.iter().zip(reference).map(|(a, b)| a - b).collect();
        let d = self.norm(&diff, kind.absolute())?;
        if !kind.is_relative() {
            return Ok(d);
        }
        let r = self.norm(reference, kind.absolute())?;
        if r == 0.0 {
            return Err(Error::InvalidData("reference has zero norm".into()));
        }
        Ok(d / r)
    }
}

/// Norm of a P1 function given by its interior nodal values.
pub fn discrete_norm(mesh: &Mesh, v: &[f64], kind: NormKind) -> Result<f64> {
    NormMatrices::new(mesh).norm(v, kind)
}

/// `‖v − exact‖` by elementwise high-order quadrature, divided by `‖exact‖`
/// for relative kinds.
pub fn error_vs_exact<G: GradientField + ?Sized>(
    mesh: &Mesh,
    v: &[f64],
    exact: &G,
    kind: NormKind,
) -> Result<f64> {
    if v.len() != mesh.n_dofs() {
        return Err(Error::Shape {
            expected: mesh.n_dofs(),
            found: v.len(),
        });
    }
    let rule = QuadratureRule::error_default(mesh.dim());
    let with_grad = matches!(kind.absolute(), NormKind::H1);
    let npe = mesh.nodes_per_element();
    let (mut err2, mut ref2) = (0.0, 0.0);
    for k in 0..mesh.n_elements() {
        let jac = mesh.element_measure(k) / rule.reference_measure();
        let nodal = mesh.gather(k, v);
        let grads = mesh.element_gradients(k);
        let mut gh = [0.0; 2];
        for a in 0..npe {
            gh[0] += nodal[a] * grads[a][0];
            gh[1] += nodal[a] * grads[a][1];
        }
        for (r, w) in rule.points.iter().zip(&rule.weights) {
            let x = mesh.map_point(k, *r);
            let phi = mesh.shape_values(*r);
            let uh: f64 = (0..npe).map(|a| phi[a] * nodal[a]).sum();
            let u = exact.value(x);
            let mut e = (uh - u).powi(2);
            let mut rr = u * u;
            if with_grad {
                let g = exact.gradient(x);
                e += (gh[0] - g[0]).powi(2) + (gh[1] - g[1]).powi(2);
                rr += g[0] * g[0] + g[1] * g[1];
            }
            err2 += w * jac * e;
            ref2 += w * jac * rr;
        }
    }
    if !kind.is_relative() {
        return Ok(err2.sqrt());
    }
    if ref2 == 0.0 {
        return Err(Error::InvalidData("exact field has zero norm".into()));
    }
    Ok((err2 / ref2).sqrt())
}

/// `E(u^ε) = c(ε)(x − x²)` for `−((1 + εY) u')' = Y` on `(0, 1)`, `Y ~ U[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactExpectation1D {
    pub c: f64,
}

impl ScalarField for ExactExpectation1D {
    fn value(&self, x: [f64; 2]) -> f64 {
        self.c * (x[0] - x[0] * x[0])
    }
}

impl GradientField for ExactExpectation1D {
    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        [self.c * (1.0 - 2.0 * x[0]), 0.0]
    }
}

/// `c(ε) = ½(1/ε − ln(1+ε)/ε²)`; `ε = 0` gives the limit `¼`.
///
/// Small `ε` uses the series `½ Σ_k (−ε)^k / (k + 2)` to avoid cancellation.
pub fn exact_expectation_1d(epsilon: f64) -> Result<ExactExpectation1D> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidData(format!(
            "epsilon must be finite and nonnegative, got {epsilon}"
        )));
    }
    let c = if epsilon < 1e-2 {
        let mut s = 0.0;
        let mut p = 1.0;
        for k in 0..14 {
            s += p / (k + 2) as f64;
            p *= -epsilon;
        }
        0.5 * s
    } else {
        0.5 * (1.0 / epsilon - epsilon.ln_1p() / (epsilon * epsilon))
    };
    Ok(ExactExpectation1D { c })
}

/// Deterministic replacement for the Monte Carlo mean over scalar uniform inputs.
#[derive(Debug, Clone)]
pub struct QuadratureExpectation {
    pub psi: FieldVector,
    /// `E(u_n^h)` for `n = 0..N`.
    pub mode_means: Vec<FieldVector>,
}

/// How a scalar input depends on the quadrature axes.
enum ScalarInput {
    Fixed,
    Axis { axis: usize, lo: f64, hi: f64 },
}

fn classify(spec: &RandomFieldSpec, streams: &mut Vec<u32>) -> Result<ScalarInput> {
    match spec {
        RandomFieldSpec::Deterministic(_) => Ok(ScalarInput::Fixed),
        RandomFieldSpec::ScalarUniform { lo, hi, stream } => {
            let axis = match streams.iter().position(|s| s == stream) {
                Some(a) => a,
                None => {
                    streams.push(*stream);
                    streams.len() - 1
                }
            };
            Ok(ScalarInput::Axis {
                axis,
                lo: *lo,
                hi: *hi,
            })
        }
        _ => Err(Error::UnsupportedSpec(
            "quadrature expectation needs scalar uniform or deterministic inputs".into(),
        )),
    }
}

fn coords(input: &ScalarInput, t: &[f64]) -> Vec<f64> {
    match input {
        ScalarInput::Fixed => Vec::new(),
        ScalarInput::Axis { axis, lo, hi } => vec![lo + (hi - lo) * t[*axis]],
    }
}

/// `E(U_N^h)` with the expectation over the scalar uniform inputs replaced
/// by an `n_points`-point Gauss–Legendre rule per distinct variable.
pub fn quadrature_expectation_1d(
    config: &SolverConfig,
    inputs: &ProblemInputs,
    n_points: usize,
) -> Result<QuadratureExpectation> {
    config.validate()?;
    if n_points == 0 {
        return Err(Error::InvalidConfig("need at least one quadrature point".into()));
    }
    let mut streams = Vec::new();
    let eta_in = classify(&inputs.eta, &mut streams)?;
    let f_in = classify(&inputs.f, &mut streams)?;
    let mesh = config.mesh.build()?;
    let solver = MultiModeSolver::new(&mesh, &inputs.a0, config.quadrature_rule())?;
    let gl = QuadratureRule::gauss_legendre(n_points);
    let n_axes = streams.len();
    let dim = mesh.n_dofs();
    let mut psi = FieldVector::zeros(dim);
    let mut mode_means = vec![FieldVector::zeros(dim); config.n_modes];
    let mut counters = OpCounters::default();
    let mut timings = Timings::default();
    let total = n_points.pow(n_axes as u32);
    for q in 0..total {
        let mut t = vec![0.0; n_axes];
        let mut w = 1.0;
        let mut rest = q;
        for ta in t.iter_mut() {
            let i = rest % n_points;
            rest /= n_points;
            *ta = gl.points[i][0];
            w *= gl.weights[i];
        }
        let draw = SampleDraw::from_coordinates(
            &inputs.eta,
            &inputs.f,
            q as u64,
            coords(&eta_in, &t),
            coords(&f_in, &t),
        )?;
        let mut weight = w;
        solver.sample_modes(&draw, config.n_modes, &mut counters, &mut timings, |n, u| {
            psi.axpy(weight, u);
            mode_means[n].axpy(w, u);
            weight *= config.epsilon;
        })?;
    }
    Ok(QuadratureExpectation { psi, mode_means })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub parameter: f64,
    pub error: f64,
    /// Order relative to the previous row.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.order).collect()
    }
}

/// Orders `log(e_i/e_{i+1}) / log(p_i/p_{i+1})` between consecutive rows.
pub fn convergence_orders(pairs: &[(f64, f64)]) -> Result<ConvergenceTable> {
    for &(p, e) in pairs {
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::InvalidData(format!("error must be positive, got {e}")));
        }
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::InvalidData(format!("parameter must be positive, got {p}")));
        }
    }
    if pairs.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(Error::InvalidData("parameters must be strictly decreasing".into()));
    }
    let rows = pairs
        .iter()
        .enumerate()
        .map(|(i, &(p, e))| ConvergenceRow {
            parameter: p,
            error: e,
            order: (i > 0).then(|| {
                let (p0, e0) = pairs[i - 1];
                (e0 / e).ln() / (p0 / p).ln()
            }),
        })
        .collect();
    Ok(ConvergenceTable { rows })
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance, `None` below two samples.
    pub fn variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| self.m2 / (self.count - 1) as f64)
    }

    pub fn standard_error(&self) -> Option<f64> {
        self.variance().map(|v| (v / self.count as f64).sqrt())
    }
}

/// Sample standard deviation over `√M`.
pub fn mc_standard_error(values: &[f64]) -> Result<f64> {
    let mut w = Welford::default();
    values.iter().for_each(|&v| w.push(v));
    w.standard_error()
        .ok_or_else(|| Error::InvalidData("standard error needs at least two samples".into()))
}

/// L2 aggregate of per-node standard errors, `(Σ_i var_i ∫φ_i / M)^{1/2}`.
pub fn mc_standard_error_l2(variance: &[f64], lumped_mass: &[f64], n_samples: usize) -> Result<f64> {
    if n_samples < 2 {
        return Err(Error::InvalidData("standard error needs at least two samples".into()));
    }
    if variance.len() != lumped_mass.len() {
        return Err(Error::Shape {
            expected: lumped_mass.len(),
            found: variance.len(),
        });
    }
    let s: f64 = variance.iter().zip(lumped_mass).map(|(v, w)| v * w).sum();
    Ok((s / n_samples as f64).sqrt())
}

/// Least-squares fit `ln v_n ≈ a + n ln C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricFit {
    pub rate: f64,
    pub prefactor: f64,
    /// Largest `|fit/v − 1|` over the data.
    pub max_relative_residual: f64,
}

pub fn geometric_fit(values: &[f64]) -> Result<GeometricFit> {
    if values.len() < 2 {
        return Err(Error::InvalidData("fit needs at least two values".into()));
    }
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidData("fit needs positive values".into()));
    }
    let n = values.len() as f64;
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let xm = (n - 1.0) / 2.0;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    let b = sxy / sxx;
    let a = ym - b * xm;
    let max_relative_residual = values
        .iter()
        .enumerate()
        .map(|(i, v)| ((a + b * i as f64).exp() / v - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(GeometricFit {
        rate: b.exp(),
        prefactor: a.exp(),
        max_relative_residual,
    })
}
