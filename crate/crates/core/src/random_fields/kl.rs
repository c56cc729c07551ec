//! Karhunen–Loève decomposition of a covariance operator by the Nyström method.
//!
//! The covariance operator `(Cφ)(x) = ∫_D C(x, y) φ(y) dy` is discretized on a
//! Gauss–Legendre grid with weights `w`. The symmetric matrix
//! `W^{1/2} C W^{1/2}` shares its spectrum with the discrete operator, and the
//! eigenfunctions are recovered at the nodes as `W^{-1/2} v`.
//!
//! Exponential kernels have a derivative kink on the diagonal, which limits
//! the plain rule to a few digits. When the row integral `g(x) = ∫_D C(x, y) dy`
//! is known in closed form, the kink is subtracted out:
//! `∫ C(x, y) φ(y) dy = ∫ C(x, y) (φ(y) − φ(x)) dy + g(x) φ(x)`, which only adds
//! the diagonal `g(x_i) − Σ_j w_j C(x_i, x_j)` and keeps the matrix symmetric.

use std::sync::Arc;

use nalgebra::DMatrix;
use libm::erf;

use crate::error::{Error, Result};
use crate::mesh::Domain;
use crate::quadrature::gauss_legendre;

use super::{DeterministicField, KlFieldSpec, NoiseLaw, RandomFieldSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceKernel {
    /// `exp(−|x − y|^power / length)` with Euclidean distance, `power ∈ {1, 2}`.
    ExpAbs { power: u32, length: f64 },
    /// Values at the Nyström nodes, row-major; 1D domains only.
    Tabulated { values: Vec<Vec<f64>> },
}

impl CovarianceKernel {
    pub fn exp_abs(power: u32, length: f64) -> Result<Self> {
        if power != 1 && power != 2 {
            return Err(Error::Kernel(format!("power must be 1 or 2, got {power}")));
        }
        if !(length > 0.0 && length < 1.0) {
            return Err(Error::Kernel(format!(
                "correlation length must lie in (0, 1), got {length}"
            )));
        }
        Ok(Self::ExpAbs { power, length })
    }

    /// Kernel value for analytic kernels; `None` for tabulated ones.
    pub fn value(&self, x: [f64; 2], y: [f64; 2]) -> Option<f64> {
        match *self {
            Self::ExpAbs { power, length } => {
                let r = (x[0] - y[0]).hypot(x[1] - y[1]);
                let rp = if power == 1 { r } else { r * r };
                Some((-rp / length).exp())
            }
            Self::Tabulated { .. } => None,
        }
    }

    /// `∫_D C(x, y) dy` where available in closed form.
    fn row_integral(&self, domain: &Domain, x: [f64; 2]) -> Option<f64> {
        let Self::ExpAbs { power, length } = *self else {
            return None;
        };
        let interval = |lo: f64, hi: f64, t: f64| match power {
            1 => length * (2.0 - (-(t - lo) / length).exp() - (-(hi - t) / length).exp()),
            _ => {
                let s = length.sqrt();
                0.5 * (std::f64::consts::PI * length).sqrt()
                    * (erf((hi - t) / s) + erf((t - lo) / s))
            }
        };
        match *domain {
            Domain::Interval1D { x_lo, x_hi } => Some(interval(x_lo, x_hi, x[0])),
            // Only the Gaussian kernel separates over a rectangle.
            Domain::Rect2D {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            } if power == 2 => Some(interval(x_lo, x_hi, x[0]) * interval(y_lo, y_hi, x[1])),
            Domain::Rect2D { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NystromOptions {
    /// Gauss–Legendre nodes per coordinate direction.
    pub nodes_per_dir: usize,
    /// Number of eigenfunctions retained.
    pub k_max: usize,
    /// Apply the diagonal kink correction when the kernel supports it.
    pub correction: bool,
}

impl NystromOptions {
    pub fn new(nodes_per_dir: usize, k_max: usize) -> Self {
        Self {
            nodes_per_dir,
            k_max,
            correction: true,
        }
    }

    pub fn plain(nodes_per_dir: usize, k_max: usize) -> Self {
        Self {
            correction: false,
            ..Self::new(nodes_per_dir, k_max)
        }
    }
}

/// Discrete KL eigenpairs of a covariance kernel.
#[derive(Debug, Clone)]
pub struct KlBasis {
    kernel: CovarianceKernel,
    domain: Domain,
    nodes: Vec<[f64; 2]>,
    weights: Vec<f64>,
    /// Every computed eigenvalue, descending, clipped at zero.
    eigenvalues: Vec<f64>,
    /// Leading eigenfunctions at the nodes, unit norm in the weighted inner product.
    modes: Vec<Vec<f64>>,
    /// Diagonal correction `g(x_i) − Σ_j w_j C(x_i, x_j)` when applied.
    correction: Option<Vec<f64>>,
}

fn nystrom_grid(domain: &Domain, n: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let (t, w) = gauss_legendre(n);
    let map = |lo: f64, hi: f64| -> Vec<(f64, f64)> {
        t.iter()
            .zip(&w)
            .map(|(ti, wi)| (lo + 0.5 * (hi - lo) * (ti + 1.0), 0.5 * (hi - lo) * wi))
            .collect()
    };
    match *domain {
        Domain::Interval1D { x_lo, x_hi } => map(x_lo, x_hi)
            .into_iter()
            .map(|(x, w)| ([x, 0.0], w))
            .unzip(),
        Domain::Rect2D {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        } => {
            let (gx, gy) = (map(x_lo, x_hi), map(y_lo, y_hi));
            gy.iter()
                .flat_map(|&(y, wy)| gx.iter().map(move |&(x, wx)| ([x, y], wx * wy)))
                .unzip()
        }
    }
}

/// Nyström eigendecomposition of the covariance operator on `domain`.
pub fn kl_decompose(
    kernel: &CovarianceKernel,
    domain: &Domain,
    opts: NystromOptions,
) -> Result<KlBasis> {
    domain.validate().map_err(|e| Error::Kernel(e.to_string()))?;
    if opts.nodes_per_dir < 1 {
        return Err(Error::InvalidData("need at least one Nyström node".into()));
    }
    let (nodes, weights) = nystrom_grid(domain, opts.nodes_per_dir);
    let n = nodes.len();
    if opts.k_max == 0 || opts.k_max > n {
        return Err(Error::InvalidData(format!(
            "k_max must lie in 1..={n}, got {}",
            opts.k_max
        )));
    }

    let cov = match kernel {
        CovarianceKernel::ExpAbs { .. } => DMatrix::from_fn(n, n, |i, j| {
            kernel.value(nodes[i], nodes[j]).expect("analytic kernel")
        }),
        CovarianceKernel::Tabulated { values } => {
            if domain.dim() != 1 {
                return Err(Error::Kernel("tabulated kernels are 1D only".into()));
            }
            if values.len() != n || values.iter().any(|r| r.len() != n) {
                return Err(Error::Kernel(format!(
                    "tabulated kernel must be {n} x {n} to match the nodes"
                )));
            }
            let scale = values
                .iter()
                .flatten()
                .fold(0.0f64, |m, v| m.max(v.abs()))
                .max(f64::MIN_POSITIVE);
            for i in 0..n {
                for j in 0..i {
                    if (values[i][j] - values[j][i]).abs() > 1e-12 * scale {
                        return Err(Error::Kernel(format!(
                            "tabulated kernel not symmetric at ({i}, {j})"
                        )));
                    }
                }
            }
            DMatrix::from_fn(n, n, |i, j| values[i][j])
        }
    };

    let correction = if opts.correction {
        nodes
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                kernel.row_integral(domain, x).map(|g| {
                    let row: f64 = (0..n).map(|j| weights[j] * cov[(i, j)]).sum();
                    g - row
                })
            })
            .collect::<Option<Vec<f64>>>()
    } else {
        None
    };

    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let mut sym = DMatrix::from_fn(n, n, |i, j| sqrt_w[i] * cov[(i, j)] * sqrt_w[j]);
    if let Some(d) = &correction {
        for (i, di) in d.iter().enumerate() {
            sym[(i, i)] += di;
        }
    }
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let modes = order[..opts.k_max]
        .iter()
        .map(|&k| {
            let v = eig.eigenvectors.column(k);
            let mut phi: Vec<f64> = v.iter().zip(&sqrt_w).map(|(vi, s)| vi / s).collect();
            let norm: f64 = phi
                .iter()
                .zip(&weights)
                .map(|(p, w)| w * p * p)
                .sum::<f64>()
                .sqrt();
            // Fix the sign so the largest-magnitude nodal value is positive.
            let pivot = phi
                .iter()
                .copied()
                .fold(0.0f64, |m, p| if p.abs() > m.abs() { p } else { m });
            let s = if pivot < 0.0 { -1.0 } else { 1.0 } / norm;
            phi.iter_mut().for_each(|p| *p *= s);
            phi
        })
        .collect();

    Ok(KlBasis {
        kernel: kernel.clone(),
        domain: *domain,
        nodes,
        weights,
        eigenvalues,
        modes,
        correction,
    })
}

impl KlBasis {
    pub fn kernel(&self) -> &CovarianceKernel {
        &self.kernel
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Number of eigenfunctions available for evaluation.
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn mode_at_nodes(&self, k: usize) -> &[f64] {
        &self.modes[k]
    }

    pub fn is_corrected(&self) -> bool {
        self.correction.is_some()
    }

    /// Sum of all computed eigenvalues.
    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Values `φ_k(x)` for `k < out.len()`, by Nyström interpolation for
    /// analytic kernels and linear interpolation between nodes otherwise.
    pub fn eval_modes(&self, x: [f64; 2], out: &mut [f64]) {
        assert!(out.len() <= self.modes.len(), "requested more modes than retained");
        if matches!(self.kernel, CovarianceKernel::Tabulated { .. }) {
            self.interpolate_modes(x[0], out);
            return;
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut row_sum = 0.0;
        for (j, (&y, &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let r = w * self.kernel.value(x, y).expect("analytic kernel");
            row_sum += r;
            for (o, mode) in out.iter_mut().zip(&self.modes) {
                *o += r * mode[j];
            }
        }
        let shift = match &self.correction {
            Some(_) => self
                .kernel
                .row_integral(&self.domain, x)
                .map_or(0.0, |g| g - row_sum),
            None => 0.0,
        };
        for (k, o) in out.iter_mut().enumerate() {
            *o /= self.eigenvalues[k] - shift;
        }
    }

    fn interpolate_modes(&self, x: f64, out: &mut [f64]) {
        let xs: Vec<f64> = self.nodes.iter().map(|p| p[0]).collect();
        let n = xs.len();
        let pos = xs.partition_point(|&t| t < x);
        let (i0, i1, t) = if n == 1 {
            (0, 0, 0.0)
        } else if pos == 0 {
            (0, 1, (x - xs[0]) / (xs[1] - xs[0]))
        } else if pos >= n {
            (n - 2, n - 1, (x - xs[n - 2]) / (xs[n - 1] - xs[n - 2]))
        } else {
            (pos - 1, pos, (x - xs[pos - 1]) / (xs[pos] - xs[pos - 1]))
        };
        for (o, mode) in out.iter_mut().zip(&self.modes) {
            *o = mode[i0] + t * (mode[i1] - mode[i0]);
        }
    }

    /// Truncated expansion `ā + Σ_k √λ_k φ_k(x) ξ_k` over `xi.len()` terms.
    pub fn direct_sum(&self, mean: f64, xi: &[f64], x: [f64; 2]) -> f64 {
        let mut phi = vec![0.0; xi.len()];
        self.eval_modes(x, &mut phi);
        mean + xi
            .iter()
            .zip(&phi)
            .zip(&self.eigenvalues)
            .map(|((xi, p), l)| l.sqrt() * p * xi)
            .sum::<f64>()
    }
}

/// A coefficient rewritten as `a0 + ε η` with normalized perturbation `η = ζ`.
#[derive(Debug, Clone)]
pub struct WeakForm {
    pub a0: DeterministicField,
    pub epsilon: f64,
    pub eta: RandomFieldSpec,
}

/// `ā + Σ √λ_k φ_k ξ_k = ā + √λ_1 ζ` with `ζ = Σ √(λ_k/λ_1) φ_k ξ_k`.
pub fn kl_to_weak_form(
    mean: DeterministicField,
    basis: Arc<KlBasis>,
    k_max: usize,
    law: NoiseLaw,
    stream: u32,
) -> Result<WeakForm> {
    let lambda1 = basis.eigenvalues().first().copied().unwrap_or(0.0);
    if !(lambda1 > 0.0) {
        return Err(Error::DegenerateField(format!(
            "leading eigenvalue {lambda1} is not positive"
        )));
    }
    if k_max == 0 || k_max > basis.n_modes() {
        return Err(Error::InvalidData(format!(
            "k_max must lie in 1..={}, got {k_max}",
            basis.n_modes()
        )));
    }
    let spec = KlFieldSpec::new(basis, k_max, law, stream)?;
    Ok(WeakForm {
        a0: mean,
        epsilon: lambda1.sqrt(),
        eta: RandomFieldSpec::Kl(spec),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Domain {
        Domain::interval(0.0, 1.0).unwrap()
    }

    #[test]
    fn kernel_validation() {
        assert!(CovarianceKernel::exp_abs(3, 0.5).is_err());
        assert!(CovarianceKernel::exp_abs(1, 0.0).is_err());
        assert!(CovarianceKernel::exp_abs(1, 1.0).is_err());
        let k = CovarianceKernel::exp_abs(2, 0.3).unwrap();
        assert_eq!(k.value([0.2, 0.0], [0.2, 0.0]), Some(1.0));
        assert_eq!(k.value([0.1, 0.0], [0.6, 0.0]), k.value([0.6, 0.0], [0.1, 0.0]));
    }

    #[test]
    fn row_integral_matches_quadrature() {
        let (t, w) = gauss_legendre(200);
        for power in [1, 2] {
            let k = CovarianceKernel::exp_abs(power, 0.4).unwrap();
            let x = 0.37;
            // Split at the kink so both halves are smooth.
            let half = |lo: f64, hi: f64| -> f64 {
                t.iter()
                    .zip(&w)
                    .map(|(ti, wi)| {
                        let y = lo + 0.5 * (hi - lo) * (ti + 1.0);
                        0.5 * (hi - lo) * wi * k.value([x, 0.0], [y, 0.0]).unwrap()
                    })
                    .sum()
            };
            let q = half(0.0, x) + half(x, 1.0);
            let g = k.row_integral(&unit(), [x, 0.0]).unwrap();
            assert!((q - g).abs() < 1e-13, "power {power}: {q} vs {g}");
        }
    }

    #[test]
    fn plain_trace_identity_and_ordering() {
        let k = CovarianceKernel::exp_abs(1, 0.5).unwrap();
        let b = kl_decompose(&k, &unit(), NystromOptions::plain(200, 10)).unwrap();
        assert!((b.trace() - 1.0).abs() < 1e-12);
        assert!(b.eigenvalues().windows(2).all(|p| p[0] >= p[1]));
        assert!(b.eigenvalues().iter().all(|&l| l >= 0.0));
        assert!(!b.is_corrected());
    }

    #[test]
    fn modes_are_orthonormal_and_interpolate_nodes() {
        let k = CovarianceKernel::exp_abs(1, 0.3).unwrap();
        for opts in [NystromOptions::plain(80, 6), NystromOptions::new(80, 6)] {
            let b = kl_decompose(&k, &unit(), opts).unwrap();
            for a in 0..6 {
                for c in 0..6 {
                    let ip: f64 = (0..80)
                        .map(|j| b.weights()[j] * b.mode_at_nodes(a)[j] * b.mode_at_nodes(c)[j])
                        .sum();
                    let expect = if a == c { 1.0 } else { 0.0 };
                    assert!((ip - expect).abs() < 1e-10);
                }
            }
            let mut phi = vec![0.0; 6];
            for j in [0, 17, 79] {
                b.eval_modes(b.nodes()[j], &mut phi);
                for (k, p) in phi.iter().enumerate() {
                    assert!((p - b.mode_at_nodes(k)[j]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn tabulated_kernel_checks() {
        let n = 20;
        let b = kl_decompose(
            &CovarianceKernel::exp_abs(2, 0.5).unwrap(),
            &unit(),
            NystromOptions::plain(n, 3),
        )
        .unwrap();
        let values: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (-(b.nodes()[i][0] - b.nodes()[j][0]).powi(2) / 0.5).exp())
                    .collect()
            })
            .collect();
        let tab = kl_decompose(
            &CovarianceKernel::Tabulated {
                values: values.clone(),
            },
            &unit(),
            NystromOptions::plain(n, 3),
        )
        .unwrap();
        for k in 0..3 {
            assert!((tab.eigenvalues()[k] - b.eigenvalues()[k]).abs() < 1e-12);
        }
        let mut bad = values;
        bad[0][1] += 1e-3;
        let err = kl_decompose(
            &CovarianceKernel::Tabulated { values: bad },
            &unit(),
            NystromOptions::plain(n, 3),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Kernel(_)));
    }

    #[test]
    fn k_max_bounds() {
        let k = CovarianceKernel::exp_abs(1, 0.5).unwrap();
        assert!(kl_decompose(&k, &unit(), NystromOptions::plain(10, 11)).is_err());
        assert!(kl_decompose(&k, &unit(), NystromOptions::plain(10, 0)).is_err());
    }

    #[test]
    fn two_dimensional_grid() {
        let d = Domain::rect(0.0, 1.0, 0.0, 1.0).unwrap();
        let k = CovarianceKernel::exp_abs(2, 0.5).unwrap();
        let b = kl_decompose(&k, &d, NystromOptions::new(12, 4)).unwrap();
        assert_eq!(b.nodes().len(), 144);
        assert!(b.is_corrected());
        assert!((b.weights().iter().sum::<f64>() - 1.0).abs() < 1e-13);
        assert!(b.eigenvalues()[0] > b.eigenvalues()[3]);
        let k1 = CovarianceKernel::exp_abs(1, 0.5).unwrap();
        let b1 = kl_decompose(&k1, &d, NystromOptions::new(12, 4)).unwrap();
        assert!(!b1.is_corrected());
        assert!((b1.trace() - 1.0).abs() < 1e-12);
    }
}
