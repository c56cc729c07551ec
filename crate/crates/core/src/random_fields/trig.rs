//! Trigonometric-series perturbation and source fields on a rectangle.
//!
//! ```text
//! η(ω, x) = base + Σ_{m,n} a e^{−d(m²+n²)} cos(mπ(x1−c1)) cos(nπ(x2−c2)) Y_{m,n}(ω)
//! f(ω, x) = x1² + x2² + Σ_{m,n} b e^{−d(m²+n²)} sin(mπ(x1−c1)) sin(nπ(x2−c2)) Z_{m,n}(ω)
//! ```
//! with `Y ~ U[−1, 1]` and `Z ~ N(0, 1)`, all independent.

use std::f64::consts::PI;

/// Largest number of terms per direction handled without allocation.
const STACK_TERMS: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct TrigSeriesEta {
    pub m_terms: usize,
    pub n_terms: usize,
    pub decay: f64,
    pub base: f64,
    pub amplitude: f64,
    pub center: [f64; 2],
}

impl Default for TrigSeriesEta {
    fn default() -> Self {
        Self {
            m_terms: 10,
            n_terms: 10,
            decay: 0.2,
            base: 0.5,
            amplitude: 0.5,
            center: [1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrigSeriesSource {
    pub m_terms: usize,
    pub n_terms: usize,
    pub decay: f64,
    pub amplitude: f64,
    pub center: [f64; 2],
}

impl Default for TrigSeriesSource {
    fn default() -> Self {
        Self {
            m_terms: 5,
            n_terms: 5,
            decay: 0.2,
            amplitude: 2.0,
            center: [1.0, 1.0],
        }
    }
}

fn series_weights(m_terms: usize, n_terms: usize, amplitude: f64, decay: f64) -> Vec<f64> {
    let mut w = Vec::with_capacity(m_terms * n_terms);
    for m in 1..=m_terms {
        for n in 1..=n_terms {
            w.push(amplitude * (-decay * (m * m + n * n) as f64).exp());
        }
    }
    w
}

impl TrigSeriesEta {
    pub fn n_coordinates(&self) -> usize {
        self.m_terms * self.n_terms
    }

    /// Term weights `a e^{−d(m²+n²)}`, row-major in `(m, n)`.
    pub fn weights(&self) -> Vec<f64> {
        series_weights(self.m_terms, self.n_terms, self.amplitude, self.decay)
    }

    /// Almost-sure bounds of `η` given `|Y| ≤ 1`.
    pub fn bounds(&self) -> (f64, f64) {
        let s: f64 = self.weights().iter().sum();
        (self.base - s, self.base + s)
    }

    /// Multiplies the weights into the drawn coordinates.
    pub fn realize(&self, coords: &[f64]) -> Vec<f64> {
        self.weights().iter().zip(coords).map(|(w, y)| w * y).collect()
    }

    /// Evaluates with coefficients already produced by [`Self::realize`].
    pub fn eval_realized(&self, coef: &[f64], x: [f64; 2]) -> f64 {
        self.base
            + eval_product_series(
                coef,
                self.m_terms,
                self.n_terms,
                PI * (x[0] - self.center[0]),
                PI * (x[1] - self.center[1]),
                Basis::Cos,
            )
    }

    pub fn eval(&self, coords: &[f64], x: [f64; 2]) -> f64 {
        self.eval_realized(&self.realize(coords), x)
    }
}

impl TrigSeriesSource {
    pub fn n_coordinates(&self) -> usize {
        self.m_terms * self.n_terms
    }

    pub fn weights(&self) -> Vec<f64> {
        series_weights(self.m_terms, self.n_terms, self.amplitude, self.decay)
    }

    pub fn realize(&self, coords: &[f64]) -> Vec<f64> {
        self.weights().iter().zip(coords).map(|(w, z)| w * z).collect()
    }

    pub fn eval_realized(&self, coef: &[f64], x: [f64; 2]) -> f64 {
        x[0] * x[0]
            + x[1] * x[1]
            + eval_product_series(
                coef,
                self.m_terms,
                self.n_terms,
                PI * (x[0] - self.center[0]),
                PI * (x[1] - self.center[1]),
                Basis::Sin,
            )
    }

    pub fn eval(&self, coords: &[f64], x: [f64; 2]) -> f64 {
        self.eval_realized(&self.realize(coords), x)
    }
}

/// `η` with the default 10 × 10 series.
pub fn eval_eta_2d(coords: &[f64], x: [f64; 2]) -> f64 {
    TrigSeriesEta::default().eval(coords, x)
}

/// `f` with the default 5 × 5 series.
pub fn eval_f_2d(coords: &[f64], x: [f64; 2]) -> f64 {
    TrigSeriesSource::default().eval(coords, x)
}

#[derive(Clone, Copy)]
enum Basis {
    Cos,
    Sin,
}

/// `trig(kθ)` for `k = 1..=out.len()` by the Chebyshev recurrence.
fn multiples(theta: f64, basis: Basis, out: &mut [f64]) {
    let c1 = theta.cos();
    let (mut prev, mut cur) = match basis {
        Basis::Cos => (1.0, c1),
        Basis::Sin => (0.0, theta.sin()),
    };
    for o in out.iter_mut() {
        *o = cur;
        let next = 2.0 * c1 * cur - prev;
        prev = cur;
        cur = next;
    }
}

fn eval_product_series(
    coef: &[f64],
    m_terms: usize,
    n_terms: usize,
    theta1: f64,
    theta2: f64,
    basis: Basis,
) -> f64 {
    let mut buf1 = [0.0; STACK_TERMS];
    let mut buf2 = [0.0; STACK_TERMS];
    let mut heap1;
    let mut heap2;
    let (t1, t2): (&mut [f64], &mut [f64]) = if m_terms <= STACK_TERMS && n_terms <= STACK_TERMS {
        (&mut buf1[..m_terms], &mut buf2[..n_terms])
    } else {
        heap1 = vec![0.0; m_terms];
        heap2 = vec![0.0; n_terms];
        (&mut heap1[..], &mut heap2[..])
    };
    multiples(theta1, basis, t1);
    multiples(theta2, basis, t2);
    let mut acc = 0.0;
    for (m, row) in coef.chunks_exact(n_terms).enumerate().take(m_terms) {
        let inner: f64 = row.iter().zip(t2.iter()).map(|(c, t)| c * t).sum();
        acc += t1[m] * inner;
    }
    acc
}
