//! Random inputs of the perturbed problem: the perturbation `η(ω, x)`, the
//! source `f(ω, x)`, and their per-sample realizations.
//!
//! Every random coordinate is generated from a counter-based stream keyed by
//! `(seed, sample index, variable id)`. Two specs declaring the same variable
//! id consume the same underlying uniforms, which is how a single scalar
//! `Y(ω)` drives both `η` and `f` in the 1D benchmark.

pub mod kl;
pub mod stream;
pub mod trig;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::ScalarField;

pub use kl::{kl_decompose, kl_to_weak_form, CovarianceKernel, KlBasis, NystromOptions, WeakForm};
pub use stream::{inverse_normal_cdf, VariateStream};
pub use trig::{eval_eta_2d, eval_f_2d, TrigSeriesEta, TrigSeriesSource};

/// Default variable id for the perturbation.
pub const ETA_STREAM: u32 = 1;
/// Default variable id for the source.
pub const SOURCE_STREAM: u32 = 2;

#[derive(Clone)]
pub enum DeterministicField {
    Constant(f64),
    Custom(Arc<dyn ScalarField + Send>),
}

impl fmt::Debug for DeterministicField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl ScalarField for DeterministicField {
    fn value(&self, x: [f64; 2]) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Custom(field) => field.value(x),
        }
    }
}

/// Law of the KL coordinates `ξ_k`; both have zero mean and unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseLaw {
    #[default]
    StandardNormal,
    /// Uniform on `[−√3, √3]`.
    UnitUniform,
}

impl NoiseLaw {
    fn draw(self, s: &mut VariateStream) -> f64 {
        match self {
            NoiseLaw::StandardNormal => s.standard_normal(),
            NoiseLaw::UnitUniform => {
                let a = 3f64.sqrt();
                s.uniform(-a, a)
            }
        }
    }
}

/// Normalized KL perturbation `ζ = Σ_k √(λ_k/λ_1) φ_k ξ_k`.
#[derive(Debug, Clone)]
pub struct KlFieldSpec {
    basis: Arc<KlBasis>,
    k_max: usize,
    law: NoiseLaw,
    stream: u32,
    scales: Vec<f64>,
}

impl KlFieldSpec {
    pub fn new(basis: Arc<KlBasis>, k_max: usize, law: NoiseLaw, stream: u32) -> Result<Self> {
        let ev = basis.eigenvalues();
        if k_max == 0 || k_max > basis.n_modes() {
            return Err(Error::InvalidData(format!(
                "k_max must lie in 1..={}, got {k_max}",
                basis.n_modes()
            )));
        }
        if ev.windows(2).any(|p| p[0] < p[1]) || ev.iter().any(|&l| l < 0.0) {
            return Err(Error::DegenerateField(
                "eigenvalues must be nonnegative and nonincreasing".into(),
            ));
        }
        if !(ev[0] > 0.0) {
            return Err(Error::DegenerateField("leading eigenvalue is zero".into()));
        }
        let scales = ev[..k_max].iter().map(|l| (l / ev[0]).sqrt()).collect();
        Ok(Self {
            basis,
            k_max,
            law,
            stream,
            scales,
        })
    }

    pub fn basis(&self) -> &Arc<KlBasis> {
        &self.basis
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn law(&self) -> NoiseLaw {
        self.law
    }

    /// `√(λ_k/λ_1)` for the retained terms.
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }
}

#[derive(Debug, Clone)]
pub enum RandomFieldSpec {
    /// A single `U[lo, hi]` variable, constant in space.
    ScalarUniform { lo: f64, hi: f64, stream: u32 },
    TrigSeriesEta2D { series: TrigSeriesEta, stream: u32 },
    TrigSeriesF2D { series: TrigSeriesSource, stream: u32 },
    Kl(KlFieldSpec),
    Deterministic(DeterministicField),
}

impl RandomFieldSpec {
    pub fn scalar_uniform(lo: f64, hi: f64, stream: u32) -> Result<Self> {
        let s = Self::ScalarUniform { lo, hi, stream };
        s.validate()?;
        Ok(s)
    }

    pub fn trig_eta(stream: u32) -> Self {
        Self::TrigSeriesEta2D {
            series: TrigSeriesEta::default(),
            stream,
        }
    }

    pub fn trig_source(stream: u32) -> Self {
        Self::TrigSeriesF2D {
            series: TrigSeriesSource::default(),
            stream,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::Deterministic(DeterministicField::Constant(c))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match self {
            Self::ScalarUniform { lo, hi, .. } if !(lo < hi) => {
                bad(format!("uniform bounds must satisfy lo < hi, got [{lo}, {hi}]"))
            }
            Self::TrigSeriesEta2D { series, .. } if series.m_terms < 1 || series.n_terms < 1 => {
                bad("trigonometric series needs at least one term per direction".into())
            }
            Self::TrigSeriesF2D { series, .. } if series.m_terms < 1 || series.n_terms < 1 => {
                bad("trigonometric series needs at least one term per direction".into())
            }
            _ => Ok(()),
        }
    }

    pub fn n_coordinates(&self) -> usize {
        match self {
            Self::ScalarUniform { .. } => 1,
            Self::TrigSeriesEta2D { series, .. } => series.n_coordinates(),
            Self::TrigSeriesF2D { series, .. } => series.n_coordinates(),
            Self::Kl(spec) => spec.k_max,
            Self::Deterministic(_) => 0,
        }
    }

    pub fn stream(&self) -> Option<u32> {
        match self {
            Self::ScalarUniform { stream, .. }
            | Self::TrigSeriesEta2D { stream, .. }
            | Self::TrigSeriesF2D { stream, .. } => Some(*stream),
            Self::Kl(spec) => Some(spec.stream),
            Self::Deterministic(_) => None,
        }
    }

    /// Almost-sure bounds of the realized field, where known.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            Self::ScalarUniform { lo, hi, .. } => Some((*lo, *hi)),
            Self::TrigSeriesEta2D { series, .. } => Some(series.bounds()),
            Self::Deterministic(DeterministicField::Constant(c)) => Some((*c, *c)),
            _ => None,
        }
    }

    /// Random coordinates of sample `j`.
    pub fn draw_coordinates(&self, seed: u64, j: u64) -> Vec<f64> {
        let Some(stream) = self.stream() else {
            return Vec::new();
        };
        let mut s = VariateStream::new(seed, j, stream);
        let n = self.n_coordinates();
        match self {
            Self::ScalarUniform { lo, hi, .. } => vec![s.uniform(*lo, *hi)],
            Self::TrigSeriesEta2D { .. } => (0..n).map(|_| s.uniform(-1.0, 1.0)).collect(),
            Self::TrigSeriesF2D { .. } => (0..n).map(|_| s.standard_normal()).collect(),
            Self::Kl(spec) => (0..n).map(|_| spec.law.draw(&mut s)).collect(),
            Self::Deterministic(_) => Vec::new(),
        }
    }

    /// Field for explicitly given coordinates.
    pub fn realize<'a>(&'a self, coords: &[f64]) -> Result<RealizedField<'a>> {
        if coords.len() != self.n_coordinates() {
            return Err(Error::Shape {
                expected: self.n_coordinates(),
                found: coords.len(),
            });
        }
        Ok(match self {
            Self::ScalarUniform { .. } => RealizedField::Constant(coords[0]),
            Self::TrigSeriesEta2D { series, .. } => RealizedField::Eta {
                series,
                coef: series.realize(coords),
            },
            Self::TrigSeriesF2D { series, .. } => RealizedField::Source {
                series,
                coef: series.realize(coords),
            },
            Self::Kl(spec) => RealizedField::Kl {
                basis: &spec.basis,
                coef: spec.scales.iter().zip(coords).map(|(s, x)| s * x).collect(),
            },
            Self::Deterministic(DeterministicField::Constant(c)) => RealizedField::Constant(*c),
            Self::Deterministic(DeterministicField::Custom(f)) => {
                RealizedField::Custom(f.as_ref())
            }
        })
    }
}

/// One realized sample `ω_j`.
#[derive(Debug, Clone)]
pub struct SampleDraw<'a> {
    pub index: u64,
    pub eta_coords: Vec<f64>,
    pub f_coords: Vec<f64>,
    eta_spec: &'a RandomFieldSpec,
    f_spec: &'a RandomFieldSpec,
}

/// Draws sample `j`; a pure function of `(specs, seed, j)`.
pub fn draw_sample<'a>(
    eta: &'a RandomFieldSpec,
    f: &'a RandomFieldSpec,
    seed: u64,
    j: u64,
) -> SampleDraw<'a> {
    SampleDraw {
        index: j,
        eta_coords: eta.draw_coordinates(seed, j),
        f_coords: f.draw_coordinates(seed, j),
        eta_spec: eta,
        f_spec: f,
    }
}

impl<'a> SampleDraw<'a> {
    /// Sample with caller-supplied coordinates, e.g. quadrature nodes.
    pub fn from_coordinates(
        eta: &'a RandomFieldSpec,
        f: &'a RandomFieldSpec,
        index: u64,
        eta_coords: Vec<f64>,
        f_coords: Vec<f64>,
    ) -> Result<Self> {
        for (spec, c) in [(eta, &eta_coords), (f, &f_coords)] {
            if c.len() != spec.n_coordinates() {
                return Err(Error::Shape {
                    expected: spec.n_coordinates(),
                    found: c.len(),
                });
            }
        }
        Ok(Self {
            index,
            eta_coords,
            f_coords,
            eta_spec: eta,
            f_spec: f,
        })
    }

    pub fn eta(&self) -> RealizedField<'a> {
        self.eta_spec
            .realize(&self.eta_coords)
            .expect("coordinate count checked at construction")
    }

    pub fn f(&self) -> RealizedField<'a> {
        self.f_spec
            .realize(&self.f_coords)
            .expect("coordinate count checked at construction")
    }
}

/// A realized field `x ↦ η(ω_j, x)` or `x ↦ f(ω_j, x)`.
pub enum RealizedField<'a> {
    Constant(f64),
    Custom(&'a (dyn ScalarField + Send)),
    Eta {
        series: &'a TrigSeriesEta,
        coef: Vec<f64>,
    },
    Source {
        series: &'a TrigSeriesSource,
        coef: Vec<f64>,
    },
    Kl {
        basis: &'a KlBasis,
        coef: Vec<f64>,
    },
}

impl ScalarField for RealizedField<'_> {
    fn value(&self, x: [f64; 2]) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Custom(f) => f.value(x),
            Self::Eta { series, coef } => series.eval_realized(coef, x),
            Self::Source { series, coef } => series.eval_realized(coef, x),
            Self::Kl { basis, coef } => {
                let mut buf = [0.0; 64];
                let mut heap;
                let phi: &mut [f64] = if coef.len() <= buf.len() {
                    &mut buf[..coef.len()]
                } else {
                    heap = vec![0.0; coef.len()];
                    &mut heap
                };
                basis.eval_modes(x, phi);
                coef.iter().zip(phi.iter()).map(|(c, p)| c * p).sum()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;

    #[test]
    fn scalar_uniform_draws() {
        let y = RandomFieldSpec::scalar_uniform(0.0, 1.0, ETA_STREAM).unwrap();
        for j in 0..200 {
            let d = draw_sample(&y, &y, 42, j);
            let v = d.eta_coords[0];
            assert!((0.0..=1.0).contains(&v));
            assert_eq!(d.eta().value([0.3, 0.0]), v);
            assert_eq!(d.eta().value([0.9, 0.0]), v);
            // Same variable id: η and f share the draw.
            assert_eq!(d.f_coords[0], v);
        }
        assert!(RandomFieldSpec::scalar_uniform(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn forced_zero_eta_is_base() {
        let eta = RandomFieldSpec::trig_eta(ETA_STREAM);
        let f = RandomFieldSpec::trig_source(SOURCE_STREAM);
        let d = SampleDraw::from_coordinates(&eta, &f, 0, vec![0.0; 100], vec![0.0; 25]).unwrap();
        for x in [[0.1, 0.2], [1.5, 1.9]] {
            assert_eq!(d.eta().value(x), 0.5);
        }
        assert!(SampleDraw::from_coordinates(&eta, &f, 0, vec![0.0; 99], vec![0.0; 25]).is_err());
    }

    #[test]
    fn draws_are_pure_functions_of_seed_and_index() {
        let eta = RandomFieldSpec::trig_eta(ETA_STREAM);
        let f = RandomFieldSpec::trig_source(SOURCE_STREAM);
        let a = draw_sample(&eta, &f, 9, 17);
        let _ = draw_sample(&eta, &f, 9, 3);
        let b = draw_sample(&eta, &f, 9, 17);
        assert_eq!(a.eta_coords, b.eta_coords);
        assert_eq!(a.f_coords, b.f_coords);
        let c = draw_sample(&eta, &f, 10, 17);
        assert_ne!(a.eta_coords, c.eta_coords);
        assert!(a.eta_coords.iter().all(|y| (-1.0..=1.0).contains(y)));
    }

    #[test]
    fn kl_spec_scales() {
        let basis = Arc::new(
            kl_decompose(
                &CovarianceKernel::exp_abs(1, 0.5).unwrap(),
                &Domain::interval(0.0, 1.0).unwrap(),
                NystromOptions::new(60, 5),
            )
            .unwrap(),
        );
        let spec = KlFieldSpec::new(basis.clone(), 5, NoiseLaw::StandardNormal, 3).unwrap();
        assert_eq!(spec.scales()[0], 1.0);
        assert!(spec.scales().windows(2).all(|p| p[0] >= p[1]));
        assert!(KlFieldSpec::new(basis, 6, NoiseLaw::StandardNormal, 3).is_err());
    }
}
